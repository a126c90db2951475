#pragma once

#include "msdeblur/blocks.hpp"
#include "msdeblur/config.hpp"
#include "msdeblur/data.hpp"
#include "msdeblur/downscale.hpp"
#include "msdeblur/eval.hpp"
#include "msdeblur/geometry.hpp"
#include "msdeblur/image_io.hpp"
#include "msdeblur/layers.hpp"
#include "msdeblur/loss.hpp"
#include "msdeblur/model.hpp"
#include "msdeblur/random.hpp"
#include "msdeblur/tensor.hpp"
#include "msdeblur/train.hpp"
