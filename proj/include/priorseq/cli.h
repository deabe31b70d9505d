// Copyright 2026 The PriorSeq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================


#ifndef PRIORSEQ_CLI_H_
#define PRIORSEQ_CLI_H_

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "priorseq/action_prior.h"
#include "priorseq/config.h"
#include "priorseq/corpus.h"
#include "priorseq/langmodel.h"
#include "priorseq/ngram_prior.h"

namespace priorseq {

// Names accepted as the first argument.
const std::vector<std::string>& CommandNames();

// Runs one subcommand against a fully merged configuration. Artifacts and a
// "<command>.manifest.json" go to paths.out.
void RunCommand(const std::string& command, const Config& config,
                std::ostream& out);

// `priorseq <command> [--config path] [--key value ...]`. Precedence, lowest
// first: defaults, PRIORSEQ_THREADS, config file, flags. Returns the
// process exit code; errors are written to `err` with module provenance.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// The constraint selected by the "constraint" key, built or loaded from the
// configured paths. Owns whatever the prior references.
struct ConstraintBundle {
  std::unique_ptr<NGramPrior> ngram;
  std::unique_ptr<LanguageModel> lm;
  std::unique_ptr<LmPrior> lm_prior;
  const ActionPrior* prior() const;
  std::string label;
};

ConstraintBundle LoadConstraint(const Config& config, const Vocabulary& vocab,
                                const std::vector<CaptionRecord>& records);

}  // namespace priorseq

#endif  // PRIORSEQ_CLI_H_
