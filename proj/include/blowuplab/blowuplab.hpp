#pragma once

#include "blowuplab/error.hpp"
#include "blowuplab/profile.hpp"
#include "blowuplab/scenario.hpp"
#include "blowuplab/ode.hpp"
#include "blowuplab/jacobi.hpp"
#include "blowuplab/criteria.hpp"
#include "blowuplab/index_form.hpp"
#include "blowuplab/io.hpp"
#include "blowuplab/harness.hpp"
