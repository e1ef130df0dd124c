#include "scaler_unit.h"
#include <cstdio>

int main() {
    ap_uint<8> out = 0;
    scaler_unit(ap_uint<8>(41), out);
    std::printf("scaler_unit produced %u\n", (unsigned)out);
    return 0;
}
