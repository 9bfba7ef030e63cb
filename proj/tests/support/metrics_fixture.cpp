#include "metrics_fixture.hpp"

#include <map>
#include <string>
#include <utility>

#include "world.hpp"

namespace fixtures {

using trustroute::Strategy;

trustroute::Answer pick(char letter) {
  static const std::map<char, std::string> text{{'A', "inner"}, {'B', "outer"}, {'C', "both"}, {'D', "I don't know"}};
  return {letter, text.at(letter)};
}

trustroute::TrdRecord labelled(int i, Strategy gold) {
  trustroute::TrdRecord r;
  r.question.id = "r" + std::to_string(i);
  r.question.text = "question " + std::to_string(i);
  r.question.options = {{'A', "inner"}, {'B', "outer"}, {'C', "both"}, {'D', "I don't know"}};
  r.question.correct_option = letter_for(gold);
  r.question.scenario_label = gold;
  r.internal_answer = "inner";
  r.external_answer = "outer";
  return r;
}

TwelveFixture::TwelveFixture() {
  const std::vector<std::pair<Strategy, Strategy>> rows = {
      {Strategy::FA, Strategy::FA}, {Strategy::FA, Strategy::FA}, {Strategy::FA, Strategy::FI},
      {Strategy::FI, Strategy::FI}, {Strategy::FI, Strategy::RA}, {Strategy::FI, Strategy::FE},
      {Strategy::FE, Strategy::FE}, {Strategy::FE, Strategy::FE}, {Strategy::FE, Strategy::FA},
      {Strategy::RA, Strategy::RA}, {Strategy::RA, Strategy::RA}, {Strategy::RA, Strategy::FE}};
  int i = 0;
  for (auto [gold, pred] : rows) {
    records.push_back(labelled(++i, gold));
    answers.push_back(pick(letter_for(pred)));
    decisions.push_back(pred);
  }
}

}  // namespace fixtures
