#pragma once

// umbrella header

#include "oshp/augment.hpp"
#include "oshp/autodiff.hpp"
#include "oshp/checkpoint.hpp"
#include "oshp/config.hpp"
#include "oshp/encoder.hpp"
#include "oshp/episode.hpp"
#include "oshp/eval.hpp"
#include "oshp/heads.hpp"
#include "oshp/image.hpp"
#include "oshp/losses.hpp"
#include "oshp/manifest.hpp"
#include "oshp/metrics.hpp"
#include "oshp/model.hpp"
#include "oshp/prototypes.hpp"
#include "oshp/synthetic.hpp"
#include "oshp/tailor.hpp"
#include "oshp/tensor.hpp"
#include "oshp/train.hpp"
