#include "alpha_unit.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    alpha_unit(ap_uint<8>(41), out);
    std::printf("alpha_unit produced %u\n", (unsigned)out);
    return 0;
}
