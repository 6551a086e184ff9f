#pragma once

/// Umbrella header for the rectfree library.

#include "rectfree/error.hpp"
#include "rectfree/ncpart.hpp"
#include "rectfree/dblock.hpp"
#include "rectfree/cumulant.hpp"
#include "rectfree/measures.hpp"
#include "rectfree/entropy.hpp"
#include "rectfree/fisher.hpp"
#include "rectfree/ncderiv.hpp"
#include "rectfree/randmat.hpp"
#include "rectfree/io.hpp"
