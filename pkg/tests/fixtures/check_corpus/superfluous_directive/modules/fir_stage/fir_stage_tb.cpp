#include "fir_stage.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    fir_stage(ap_uint<8>(41), out);
    std::printf("fir_stage produced %u\n", (unsigned)out);
    return 0;
}
