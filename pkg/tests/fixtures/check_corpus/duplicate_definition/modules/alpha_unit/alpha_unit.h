#ifndef ALPHA_UNIT_H
#define ALPHA_UNIT_H

#include "ap_int.h"

void alpha_unit(ap_uint<8> sample, ap_uint<8> &out);

#endif
