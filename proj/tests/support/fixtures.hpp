#pragma once

#include <string>

#include "deeplog/language.hpp"
#include "deeplog/parser.hpp"

namespace deeplog::testing {

inline const char* kAlarmModel = R"(
% alarm: burglary or earthquake
structure prob, bool.
domain video = {t1}.
domain seismic = {t2}.
pred burglary(video).
pred earthquake(seismic).
truth bool.
label burglary @ bool : identity.
label earthquake @ bool : identity.
label burglary @ prob : table(0.7).
label earthquake @ prob : table(0.01).
formula alarm_query(V:video, S:seismic) :=
    sum<burglary(V)> sum<earthquake(S)>
      transform<prob, iverson>( or<bool>(burglary(V)@bool, earthquake(S)@bool) )
      * ( burglary(V)@prob * earthquake(S)@prob ).
formula joint(V:video, S:seismic) :=
    sum<burglary(V)> sum<earthquake(S)> ( burglary(V)@prob * earthquake(S)@prob ).
formula product(V:video, S:seismic) := burglary(V)@prob * earthquake(S)@prob.
formula logic_or(V:video, S:seismic) := or<bool>(burglary(V)@bool, earthquake(S)@bool).
)";

inline Model alarm_model() { return parse_model_or_throw(kAlarmModel); }

inline GroundAtom ground_atom(const Model& m, const std::string& pred,
                              const std::vector<std::string>& args) {
  GroundAtom g;
  g.pred = m.predicate_index.at(pred);
  for (const auto& a : args) g.args.push_back(m.constant_index.at(a));
  return g;
}

}  // namespace deeplog::testing
