#pragma once

// Umbrella header for the whole library.
#include "fosep/contour.hpp"
#include "fosep/dynamics.hpp"
#include "fosep/errors.hpp"
#include "fosep/experiment.hpp"
#include "fosep/fbs.hpp"
#include "fosep/geometry.hpp"
#include "fosep/lp.hpp"
#include "fosep/opt_path.hpp"
#include "fosep/opt_time.hpp"
#include "fosep/servo.hpp"
#include "fosep/splines.hpp"
#include "fosep/trajgen.hpp"
