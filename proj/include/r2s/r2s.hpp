#pragma once

#include "r2s/camera.hpp"
#include "r2s/cloud.hpp"
#include "r2s/field.hpp"
#include "r2s/grasp.hpp"
#include "r2s/io.hpp"
#include "r2s/metrics.hpp"
#include "r2s/mise.hpp"
#include "r2s/noise.hpp"
#include "r2s/replica.hpp"
