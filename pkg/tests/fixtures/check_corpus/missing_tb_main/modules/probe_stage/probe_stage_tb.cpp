#include "probe_stage.h"
#include <cstdio>

void exercise_once() {
    ap_uint<8> out = 0;
    probe_stage(ap_uint<8>(7), out);
    std::printf("probe output %u\n", (unsigned)out);
}
