#include "soma/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace soma::kern {

#if defined(SOMA_HAVE_AVX2_TU)
namespace detail {
const Kernels& avx2_table();
}
#endif

namespace {

Backend g_backend = Backend::scalar;
bool g_initialized = false;

bool cpu_has_avx2() {
#if defined(SOMA_HAVE_AVX2_TU) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void init_once() {
    if (g_initialized) return;
    g_initialized = true;
    Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("SOMA_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) b = Backend::scalar;
        else if (std::strcmp(env, "avx2") == 0) {
            if (!cpu_has_avx2()) throw std::runtime_error("SOMA_KERNEL=avx2 but host lacks AVX2/FMA");
            b = Backend::avx2;
        } else if (std::strcmp(env, "auto") != 0) {
            throw std::runtime_error(std::string("unknown SOMA_KERNEL value: ") + env);
        }
    }
    g_backend = b;
}

}  // namespace

bool avx2_supported() { return cpu_has_avx2(); }

Backend active_backend() {
    init_once();
    return g_backend;
}

const char* backend_name() {
    return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
    init_once();
    if (b == Backend::avx2 && !cpu_has_avx2())
        throw std::runtime_error("AVX2 backend not supported on this host");
    g_backend = b;
}

const Kernels& k() {
    init_once();
#if defined(SOMA_HAVE_AVX2_TU)
    if (g_backend == Backend::avx2) return detail::avx2_table();
#endif
    return reference();
}

}  // namespace soma::kern
