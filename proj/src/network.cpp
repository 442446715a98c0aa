#include "gridfreq/network.hpp"

#include <cmath>

#include "gridfreq/error.hpp"

namespace gridfreq {

LoadPower zip_load_power(const ZipLoad& load, double v, double df, double f_n) {
    const double vr = v / load.v0;
    const double freq = 1.0 + load.kpf * df / f_n;
    return {load.p0 * (load.zp * vr * vr + load.ip * vr + load.pp) * freq,
            load.q0 * (load.zq * vr * vr + load.iq * vr + load.pq)};
}

void validate(const ZipLoad& load) {
    const double shares[] = {load.zp, load.ip, load.pp, load.zq, load.iq, load.pq};
    for (double s : shares) {
        if (s < 0.0) {
            throw ModelError("load at bus " + load.bus + ": negative ZIP share");
        }
    }
    if (std::abs(load.zp + load.ip + load.pp - 1.0) > 1e-9 ||
        std::abs(load.zq + load.iq + load.pq - 1.0) > 1e-9) {
        throw ModelError("load at bus " + load.bus + ": ZIP shares must sum to 1");
    }
    if (load.v0 <= 0.0) {
        throw ModelError("load at bus " + load.bus + ": v0 must be positive");
    }
}

}  // namespace gridfreq
