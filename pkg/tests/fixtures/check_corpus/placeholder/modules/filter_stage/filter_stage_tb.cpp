#include "filter_stage.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    filter_stage(ap_uint<8>(41), out);
    std::printf("filter_stage produced %u\n", (unsigned)out);
    return 0;
}
