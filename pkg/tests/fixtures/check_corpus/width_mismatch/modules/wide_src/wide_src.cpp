#include "wide_src.h"

void wide_src(ap_uint<8> sample, ap_uint<8> &out) {
#pragma HLS PIPELINE II=1
    ap_uint<8> shifted = (ap_uint<8>)(sample + 1);
    out = shifted;
}
