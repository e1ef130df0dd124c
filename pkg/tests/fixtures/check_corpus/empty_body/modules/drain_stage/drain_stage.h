#ifndef DRAIN_STAGE_H
#define DRAIN_STAGE_H

#include "ap_int.h"

void drain_stage(ap_uint<8> sample, ap_uint<8> &out);

#endif
