#pragma once

#include "relit/color.hpp"
#include "relit/consistency.hpp"
#include "relit/convolve.hpp"
#include "relit/degrade.hpp"
#include "relit/envmap.hpp"
#include "relit/handles.hpp"
#include "relit/image.hpp"
#include "relit/io.hpp"
#include "relit/metrics.hpp"
#include "relit/normals.hpp"
#include "relit/olat.hpp"
#include "relit/prefilter.hpp"
#include "relit/pseudo_gt.hpp"
#include "relit/routing.hpp"
#include "relit/synthgen.hpp"
