#ifndef MIXER_CORE_H
#define MIXER_CORE_H

#include "ap_int.h"

void mixer_core(ap_uint<8> sample, ap_uint<8> &out);

#endif
