#pragma once

#include "photon_correlator/analysis.hpp"
#include "photon_correlator/config.hpp"
#include "photon_correlator/correlator.hpp"
#include "photon_correlator/detector.hpp"
#include "photon_correlator/error.hpp"
#include "photon_correlator/experiments.hpp"
#include "photon_correlator/levenberg_marquardt.hpp"
#include "photon_correlator/optics.hpp"
#include "photon_correlator/random.hpp"
#include "photon_correlator/records.hpp"
#include "photon_correlator/source.hpp"
#include "photon_correlator/tag_io.hpp"
#include "photon_correlator/timetag.hpp"
