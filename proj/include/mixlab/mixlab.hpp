#pragma once

#include "mixlab/contours.hpp"
#include "mixlab/em.hpp"
#include "mixlab/expectation.hpp"
#include "mixlab/family.hpp"
#include "mixlab/gmm_closed_form.hpp"
#include "mixlab/lambda.hpp"
#include "mixlab/linearization.hpp"
#include "mixlab/local_minimum.hpp"
#include "mixlab/loss.hpp"
#include "mixlab/mixture.hpp"
#include "mixlab/one_cluster.hpp"
#include "mixlab/pgd.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/trajectory.hpp"
#include "mixlab/types.hpp"
