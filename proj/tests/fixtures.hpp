#pragma once

#include "ratebv/certify.hpp"
#include "ratebv/problems.hpp"

// Extractions of the canonical problems at the default sweep, computed once
// per test process.

inline const ratebv::Extraction& play_extraction()
{
    static const ratebv::Extraction ex = [] {
        const auto p = ratebv::problems::scalar_play();
        return ratebv::extract_bv(p.spec, p.load, p.z0);
    }();
    return ex;
}

inline const ratebv::Extraction& double_well_extraction()
{
    static const ratebv::Extraction ex = [] {
        const auto p = ratebv::problems::double_well();
        return ratebv::extract_bv(p.spec, p.load, p.z0);
    }();
    return ex;
}
