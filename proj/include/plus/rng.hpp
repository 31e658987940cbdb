#pragma once

// Counter-based 64-bit generator (splitmix finalizer over seed + counter)
// so parallel replications with derived seeds reproduce serial runs bit
// for bit. Gaussian and exponential variates come from inverse CDFs: one
// uniform in, one variate out, with no generator state beyond the counter.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace plus {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed = 0) : seed_(detail::mix64(seed ^ 0xd1b54a32d192ed03ULL)) {}

    // independent stream for a replication / subtask index
    CounterRng derive(std::uint64_t stream) const {
        CounterRng r;
        r.seed_ = detail::mix64(seed_ ^ detail::mix64(stream + 0x632be59bd9b4e019ULL));
        r.counter_ = 0;
        return r;
    }

    std::uint64_t next_u64() { return detail::mix64(seed_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    // uniform on (0, 1), never exactly 0 or 1
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal() { return normal_quantile(next_unit()); }

    double next_exponential() { return -std::log1p(-next_unit()); }

    double next_chisq1() {
        const double z = next_normal();
        return z * z;
    }

    // index in [0, bound)
    std::size_t next_index(std::size_t bound) {
        return static_cast<std::size_t>(next_u64() % bound);
    }

    // distinct uniform subset of size d from {0..n-1} by partial Fisher-Yates
    std::vector<std::size_t> subset(std::size_t n, std::size_t d) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t j = i + next_index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(d);
        return pool;
    }

    // Wichura's AS 241 double-precision normal quantile.
    static double normal_quantile(double u) {
        const double q = u - 0.5;
        if (std::abs(q) <= 0.425) {
            const double r = 0.180625 - q * q;
            const double num =
                q * (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                          + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                          + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                          + 1.3314166789178437745e2) * r + 3.3871328727963666080e0);
            const double den =
                (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                      + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                      + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                      + 4.2313330701600911252e1) * r + 1.0);
            return num / den;
        }
        double r = q < 0.0 ? u : 1.0 - u;
        r = std::sqrt(-std::log(r));
        double x;
        if (r <= 5.0) {
            r -= 1.6;
            const double num =
                (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                      + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                      + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                      + 4.63033784615654529590e0) * r + 1.42343711074968357734e0);
            const double den =
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                      + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                      + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                      + 2.05319162663775882187e0) * r + 1.0);
            x = num / den;
        } else {
            r -= 5.0;
            const double num =
                (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                      + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                      + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                      + 5.46378491116411436990e0) * r + 6.65790464350110377720e0);
            const double den =
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                      + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                      + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                      + 5.99832206555887937690e-1) * r + 1.0);
            x = num / den;
        }
        return q < 0.0 ? -x : x;
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace plus
