#pragma once

#include <adaptstep/controllers.hpp>
#include <adaptstep/csv.hpp>
#include <adaptstep/harness.hpp>
#include <adaptstep/integrators.hpp>
#include <adaptstep/krylov.hpp>
#include <adaptstep/linalg.hpp>
#include <adaptstep/problems.hpp>
#include <adaptstep/schemes.hpp>
#include <adaptstep/tuner.hpp>
