#ifndef GATE_STAGE_H
#define GATE_STAGE_H

#include "ap_int.h"

void gate_stage(ap_uint<8> sample, ap_uint<8> &out);

#endif
