#ifndef SINK_UNIT_H
#define SINK_UNIT_H

#include "ap_int.h"

void sink_unit(ap_uint<8> sample, ap_uint<8> &out);

#endif
