#include "rod/kernels.hpp"

#include <cstdlib>
#include <string>

namespace rod::kernels {

#ifdef ROD_HAVE_AVX2_BUILD
const Ops* avx2_ops_impl();
#endif

const Ops* avx2_ops() {
#ifdef ROD_HAVE_AVX2_BUILD
    static const bool supported =
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? avx2_ops_impl() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const Ops* pick_auto() {
    if (const Ops* v = avx2_ops()) return v;
    return &scalar_ops();
}

const Ops* initial() {
    if (const char* env = std::getenv("ROD_KERNELS")) {
        std::string_view want(env);
        if (want == "scalar") return &scalar_ops();
        if (want == "avx2" && avx2_ops()) return avx2_ops();
    }
    return pick_auto();
}

const Ops*& current() {
    static const Ops* cur = initial();
    return cur;
}

}  // namespace

const Ops& active() { return *current(); }

const char* active_name() { return current()->name; }

bool select(std::string_view which) {
    if (which == "auto") {
        current() = pick_auto();
        return true;
    }
    if (which == "scalar") {
        current() = &scalar_ops();
        return true;
    }
    if (which == "avx2") {
        if (const Ops* v = avx2_ops()) {
            current() = v;
            return true;
        }
        return false;
    }
    return false;
}

}  // namespace rod::kernels
