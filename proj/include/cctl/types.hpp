#pragma once

#include <string>

namespace cctl {

enum class Domain { source, target };

inline const char* domain_name(Domain d) {
    return d == Domain::source ? "source" : "target";
}

} // namespace cctl
