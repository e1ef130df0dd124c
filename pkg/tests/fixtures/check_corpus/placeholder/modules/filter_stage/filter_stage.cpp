#include "filter_stage.h"

void filter_stage(ap_uint<8> sample, ap_uint<8> &out) {
#pragma HLS PIPELINE II=1
    // PLACEHOLDER: implement the filter kernel
    out = sample;
}
