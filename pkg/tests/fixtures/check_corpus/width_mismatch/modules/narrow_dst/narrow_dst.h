#ifndef NARROW_DST_H
#define NARROW_DST_H

#include "ap_int.h"

void narrow_dst(ap_uint<8> sample, ap_uint<8> &out);

#endif
