#pragma once

#include <cstdio>
#include <string>

namespace ddls::csv {

/// Nine significant digits; the fixed format keeps output diffs reproducible.
inline std::string num(double v)
{
    if (v == 0.0) v = 0.0; // drop the sign of -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace ddls::csv
