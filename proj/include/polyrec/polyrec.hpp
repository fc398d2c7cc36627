#pragma once

#include "polyrec/annotate.hpp"
#include "polyrec/corpus.hpp"
#include "polyrec/error.hpp"
#include "polyrec/extract.hpp"
#include "polyrec/labels.hpp"
#include "polyrec/pipeline.hpp"
#include "polyrec/quantity.hpp"
#include "polyrec/service.hpp"
#include "polyrec/store.hpp"
#include "polyrec/tag.hpp"
#include "polyrec/text.hpp"
#include "polyrec/tokenize.hpp"
#include "polyrec/units.hpp"
