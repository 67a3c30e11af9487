#ifndef KME_KME_HPP
#define KME_KME_HPP
#pragma once

#include "bessel.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "format.hpp"
#include "kernels.hpp"
#include "lattice.hpp"
#include "point_map.hpp"
#include "reduced_set.hpp"
#include "sampling.hpp"
#include "serialization.hpp"

#endif // KME_KME_HPP
