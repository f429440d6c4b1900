#pragma once

#include "zsource/error.hpp"
#include "zsource/numerics.hpp"
#include "zsource/model.hpp"
#include "zsource/signals.hpp"
#include "zsource/sim.hpp"
#include "zsource/certificates.hpp"
#include "zsource/analysis.hpp"
#include "zsource/io.hpp"
