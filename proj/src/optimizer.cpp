#include "l3x/optimizer.hpp"

// Templates only; this unit checks that the header stands alone.
