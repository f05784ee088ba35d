#pragma once

#include "error.hpp"
#include "language.hpp"
#include "prng.hpp"
#include "instance.hpp"
#include "dataset_io.hpp"
#include "hunk.hpp"
#include "sampling.hpp"
#include "template.hpp"
#include "builtin_templates.hpp"
#include "codeparse.hpp"
#include "bleu.hpp"
#include "metrics.hpp"
#include "backend.hpp"
#include "harness.hpp"
