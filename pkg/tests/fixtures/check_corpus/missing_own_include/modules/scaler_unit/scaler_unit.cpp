#include "ap_int.h"

void scaler_unit(ap_uint<8> sample, ap_uint<8> &out) {
#pragma HLS PIPELINE II=1
    out = (ap_uint<8>)(sample << 1);
}
