#include "signed_src.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    signed_src(ap_uint<8>(41), out);
    std::printf("signed_src produced %u\n", (unsigned)out);
    return 0;
}
