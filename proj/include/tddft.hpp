#pragma once

#include "tddft/checkpoint.hpp"
#include "tddft/config.hpp"
#include "tddft/field.hpp"
#include "tddft/grid.hpp"
#include "tddft/groundstate.hpp"
#include "tddft/hamiltonian.hpp"
#include "tddft/hartree.hpp"
#include "tddft/krylov.hpp"
#include "tddft/laguerre.hpp"
#include "tddft/lanczos.hpp"
#include "tddft/observables.hpp"
#include "tddft/occupation.hpp"
#include "tddft/parallel.hpp"
#include "tddft/potentials.hpp"
#include "tddft/propagation.hpp"
#include "tddft/runner.hpp"
#include "tddft/units.hpp"
#include "tddft/version.hpp"
