#pragma once

// Learning-based personalized car-following driver models:
// GMM+HMM mixture regression and GMM+PDF conditional-density argmax,
// with preprocessing, cross-validation, and synthetic-data tooling.

#include "cfdm/csv_io.hpp"
#include "cfdm/evaluate.hpp"
#include "cfdm/gaussian.hpp"
#include "cfdm/gmm.hpp"
#include "cfdm/hmm.hpp"
#include "cfdm/json_io.hpp"
#include "cfdm/pdf.hpp"
#include "cfdm/preprocess.hpp"
#include "cfdm/rng.hpp"
#include "cfdm/synth.hpp"
#include "cfdm/types.hpp"
