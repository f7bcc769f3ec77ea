#pragma once

#include "json.hpp"

#include "jm/curves.hpp"
#include "jm/gluing.hpp"
#include "jm/realizer.hpp"
#include "jm/render.hpp"

namespace jm {

using Json = nlohmann::ordered_json;

Json to_json(Complex z);
Json to_json(const SpherePoint& p);  // "inf" or [re, im]
Json to_json(const RationalMap& map);
Json to_json(const CriticalOrbitPortrait& p);
Json to_json(const SolveReport& rep);
Json to_json(const RealizedMating& rm);
Json to_json(const RealizeReport& rep);
Json to_json(const RealizationReport& rep);
Json to_json(const GluingReport& rep);
Json to_json(const CircleModelReport& rep);
Json to_json(const HarnessReport& rep);
Json to_json(const Raster& raster);  // dimensions and label histogram, no pixels

}  // namespace jm
