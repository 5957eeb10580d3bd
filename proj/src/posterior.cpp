#include "dyncontrol/posterior.hpp"
