#pragma once

#define ANKLESIM_VERSION "1.0.0"
