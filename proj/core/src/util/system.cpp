#include "mqttbed/util/system.hpp"

#include <sys/resource.h>

#include <algorithm>

namespace mqttbed::util {

std::uint64_t raise_fd_limit(std::uint64_t wanted) {
    rlimit lim{};
    if (::getrlimit(RLIMIT_NOFILE, &lim) != 0) return 0;
    if (lim.rlim_cur < wanted) {
        rlimit next = lim;
        next.rlim_cur = lim.rlim_max == RLIM_INFINITY ? wanted : std::min<rlim_t>(wanted, lim.rlim_max);
        if (::setrlimit(RLIMIT_NOFILE, &next) == 0) lim = next;
    }
    return lim.rlim_cur;
}

}  // namespace mqttbed::util
