#include "diffroll/common.hpp"

#include <cstdio>

namespace diffroll {

std::string hex64(uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace diffroll
