// Copyright 2026 The rpatrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the rpatrol library. Every function returns an rp_status;
 * on failure rp_last_error() holds a message for the calling thread. Handles
 * are opaque and released with the matching *_free function. */

#ifndef RPATROL_C_API_H_
#define RPATROL_C_API_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RP_API __declspec(dllexport)
#elif defined(RPATROL_BUILDING_LIBRARY)
#define RP_API __attribute__((visibility("default")))
#else
#define RP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rp_status {
  RP_OK = 0,
  RP_INVALID_ARGUMENT = 1,
  RP_SCHEDULE = 2,
  RP_NUMERIC = 3,
  RP_DEGENERATE = 4,
  RP_PRECISION = 5,
  RP_IO = 6,
  RP_TRAINING = 7,
  RP_INTERNAL = 8,
  RP_CONFIG = 9
} rp_status;

typedef struct rp_config rp_config;
typedef struct rp_model rp_model;
typedef struct rp_solution rp_solution;

typedef struct rp_regret {
  double best;
  double achieved;
  double regret;
  double mc_stderr;
} rp_regret;

RP_API const char* rp_version(void);
RP_API const char* rp_status_string(rp_status status);
/* Message of the last failure on this thread ("" if none). */
RP_API const char* rp_last_error(void);

/* Flat key = value configuration. */
RP_API rp_status rp_config_load(const char* path, rp_config** out);
RP_API rp_status rp_config_parse(const char* text, rp_config** out);
RP_API rp_status rp_config_set(rp_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL terminated). *needed receives the full
 * length including the terminator; RP_INVALID_ARGUMENT if buf is too small
 * or the key is missing. */
RP_API rp_status rp_config_get(const rp_config* cfg, const char* key, char* buf,
                               size_t buf_len, size_t* needed);
RP_API void rp_config_free(rp_config* cfg);

/* Synthetic dataset. Keys: preset (default|desk), train, validation, test,
 * nodes, edges, feat_dim, budget, c_noise, seed. */
RP_API rp_status rp_generate_dataset(const rp_config* cfg, const char* out_dir);

/* Trains the conditional denoiser on the dataset's training split. Keys:
 * dataset, epochs, lr, batch_size, hidden, steps, beta (0 = match data
 * variance), seed. Per-epoch losses go to the optional loss callback. */
typedef void (*rp_epoch_callback)(int epoch, double loss, void* user);
RP_API rp_status rp_train_denoiser(const rp_config* cfg, const char* model_path,
                                   rp_epoch_callback on_epoch, void* user);

RP_API rp_status rp_model_load(const char* path, rp_model** out);
RP_API size_t rp_model_dim(const rp_model* model);
RP_API size_t rp_model_context_dim(const rp_model* model);
/* n ancestral samples written row-major into out (n * dim doubles). */
RP_API rp_status rp_model_sample(const rp_model* model, const double* context,
                                 size_t context_len, size_t n, uint64_t seed, double* out);
RP_API void rp_model_free(rp_model* model);

/* Solves one instance with one method. Experiment keys plus: method,
 * instance, split (test|validation), seed. */
RP_API rp_status rp_solve(const rp_config* cfg, rp_solution** out);
RP_API size_t rp_solution_num_atoms(const rp_solution* sol);
RP_API size_t rp_solution_dim(const rp_solution* sol);
RP_API rp_status rp_solution_atom(const rp_solution* sol, size_t index, double* x_out,
                                  double* prob_out);
/* Restricted-game value; NaN for methods without one. */
RP_API double rp_solution_value(const rp_solution* sol);
RP_API rp_status rp_solution_save_json(const rp_solution* sol, const char* path);
RP_API rp_status rp_solution_load_json(const char* path, rp_solution** out);
RP_API void rp_solution_free(rp_solution* sol);

/* Regret of a solution on one instance under the test tilt gamma_test.
 * Same keys as rp_solve. */
RP_API rp_status rp_evaluate(const rp_config* cfg, const rp_solution* sol, double gamma_test,
                             rp_regret* out);

/* Full experiment. out_dir overrides output_dir when non-NULL. */
RP_API rp_status rp_run_experiment(const char* config_path, const char* out_dir);

/* Zero-sum matrix game, row player maximizes; payoff is row-major
 * rows x cols. pi (rows) and sigma (cols) may be NULL. */
RP_API rp_status rp_solve_matrix_game(size_t rows, size_t cols, const double* payoff,
                                      double* pi, double* sigma, double* value);

#ifdef __cplusplus
}
#endif

#endif /* RPATROL_C_API_H_ */
