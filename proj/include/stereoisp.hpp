#pragma once

#include "stereoisp/ablation.hpp"
#include "stereoisp/adam.hpp"
#include "stereoisp/checkpoint.hpp"
#include "stereoisp/dataset.hpp"
#include "stereoisp/gradcheck.hpp"
#include "stereoisp/image.hpp"
#include "stereoisp/model.hpp"
#include "stereoisp/ops.hpp"
#include "stereoisp/png_io.hpp"
#include "stereoisp/raw_pipeline.hpp"
#include "stereoisp/tensor.hpp"
#include "stereoisp/training.hpp"
#include "stereoisp/warping.hpp"
