#pragma once

#include "pseudovos/error.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/image.hpp"
#include "pseudovos/netpbm.hpp"
#include "pseudovos/dataset.hpp"
#include "pseudovos/metrics.hpp"
#include "pseudovos/loss.hpp"
#include "pseudovos/toy_model.hpp"
#include "pseudovos/gradcheck.hpp"
#include "pseudovos/pseudolabel.hpp"
#include "pseudovos/synthetic.hpp"
#include "pseudovos/noise.hpp"
#include "pseudovos/review.hpp"
