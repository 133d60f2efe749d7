#pragma once

#include <mdmtl/baselines.hpp>
#include <mdmtl/cmtl.hpp>
#include <mdmtl/core.hpp>
#include <mdmtl/csv.hpp>
#include <mdmtl/dataset.hpp>
#include <mdmtl/fista.hpp>
#include <mdmtl/kmeans.hpp>
#include <mdmtl/l21.hpp>
#include <mdmtl/riskfactors.hpp>
#include <mdmtl/serialization.hpp>
