#include "chain_top.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    chain_top(ap_uint<8>(41), out);
    std::printf("chain_top produced %u\n", (unsigned)out);
    return 0;
}
