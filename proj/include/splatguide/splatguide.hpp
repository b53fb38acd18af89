#pragma once

#include "splatguide/diffusion.hpp"
#include "splatguide/error.hpp"
#include "splatguide/evaluate.hpp"
#include "splatguide/guidance.hpp"
#include "splatguide/image.hpp"
#include "splatguide/image_io.hpp"
#include "splatguide/losses.hpp"
#include "splatguide/rasterizer.hpp"
#include "splatguide/reconstruction.hpp"
#include "splatguide/scene.hpp"
#include "splatguide/synthetic.hpp"
#include "splatguide/trajectory.hpp"
