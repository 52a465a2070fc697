#pragma once

#include "ipl/core.hpp"
#include "ipl/geometry.hpp"
#include "ipl/connection.hpp"
#include "ipl/gauge.hpp"
#include "ipl/models.hpp"
#include "ipl/hitchin.hpp"
#include "ipl/asymptotics.hpp"
#include "ipl/spectral.hpp"
#include "ipl/stability.hpp"
#include "ipl/moduli.hpp"
#include "ipl/io.hpp"
#include "ipl/report.hpp"
#include "ipl/pipelines.hpp"
