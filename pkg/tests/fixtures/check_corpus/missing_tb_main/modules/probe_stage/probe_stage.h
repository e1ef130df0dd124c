#ifndef PROBE_STAGE_H
#define PROBE_STAGE_H

#include "ap_int.h"

void probe_stage(ap_uint<8> sample, ap_uint<8> &out);

#endif
