#include "relay_stage.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    relay_stage(ap_uint<8>(41), out);
    std::printf("relay_stage produced %u\n", (unsigned)out);
    return 0;
}
