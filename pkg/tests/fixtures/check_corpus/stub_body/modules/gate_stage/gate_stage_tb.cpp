#include "gate_stage.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    gate_stage(ap_uint<8>(41), out);
    std::printf("gate_stage produced %u\n", (unsigned)out);
    return 0;
}
