#pragma once

#include "emfi/campaign.hpp"
#include "emfi/classify.hpp"
#include "emfi/config.hpp"
#include "emfi/field.hpp"
#include "emfi/geometry.hpp"
#include "emfi/log.hpp"
#include "emfi/map.hpp"
#include "emfi/protocol.hpp"
#include "emfi/pulse.hpp"
#include "emfi/record.hpp"
#include "emfi/rng.hpp"
#include "emfi/targets.hpp"
