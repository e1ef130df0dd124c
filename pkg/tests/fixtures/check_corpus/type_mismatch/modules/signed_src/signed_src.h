#ifndef SIGNED_SRC_H
#define SIGNED_SRC_H

#include "ap_int.h"

void signed_src(ap_uint<8> sample, ap_uint<8> &out);

#endif
