/* raseg — reverse-attention feature-pyramid segmentation, C API.
 *
 * All functions return RASEG_OK on success. On failure they return an error
 * code and leave a human-readable message retrievable with raseg_last_error()
 * (thread-local). Handles are opaque; free them with the matching *_free.
 */
#ifndef RASEG_H
#define RASEG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum raseg_status {
    RASEG_OK = 0,
    RASEG_ERR_INVALID_ARG = 1,
    RASEG_ERR_IO = 2,
    RASEG_ERR_CONFIG = 3,
    RASEG_ERR_NUMERIC = 4,
    RASEG_ERR_INTERNAL = 5
} raseg_status;

const char* raseg_status_string(raseg_status status);
const char* raseg_last_error(void);
const char* raseg_version(void);

/* ------------------------------------------------------------------ config */

typedef struct raseg_config raseg_config;

/* Presets: "tiny-binary", "tiny-multiclass", "paper-shape". */
raseg_status raseg_config_preset(const char* name, raseg_config** out);
raseg_status raseg_config_load(const char* path, raseg_config** out);
raseg_status raseg_config_save(const raseg_config* cfg, const char* path);

/* Dotted-path override, e.g. ("train.lr", "0.001") or
 * ("model.decoder.ra_variant", "softmax"). The value is parsed as JSON when
 * possible, otherwise taken as a string. */
raseg_status raseg_config_set(raseg_config* cfg, const char* key, const char* value);
/* Writes the value at `key` as compact JSON into buf (NUL-terminated). */
raseg_status raseg_config_get(const raseg_config* cfg, const char* key, char* buf,
                              size_t buflen);
void raseg_config_free(raseg_config* cfg);

/* ------------------------------------------------------------------- tasks */

/* Synthesizes the dataset described by the JSON spec file and writes split
 * directories (train/ and val/ under out_dir) with images, label masks and
 * manifests. */
raseg_status raseg_gen_data(const char* spec_path, const char* out_dir);

/* Runs the training loop; writes logs.csv and last.ckpt under out_dir. The
 * checkpoint path is copied into ckpt_path_buf when given. */
raseg_status raseg_train(const raseg_config* cfg, const char* out_dir, char* ckpt_path_buf,
                         size_t buflen);

/* Evaluates a checkpoint on a cached split; writes the JSON report (plus a
 * CSV next to it) when report_path is non-NULL. out_mdice may be NULL. */
raseg_status raseg_evaluate(const char* ckpt_path, const char* data_dir,
                            const char* report_path, double* out_mdice);

/* Exact trainable parameter count and a 2*MACs flop estimate at input_size. */
raseg_status raseg_count_complexity(const raseg_config* cfg, int input_size,
                                    uint64_t* out_params, uint64_t* out_flops);

/* Finite-difference gradient checks. module: "tensor", "encoder", "decoder",
 * "losses", or NULL/"all". */
raseg_status raseg_gradcheck(const char* module, int* out_checked, int* out_failed);

/* ------------------------------------------------------------------- model */

typedef struct raseg_model raseg_model;

raseg_status raseg_model_open(const char* ckpt_path, raseg_model** out);
raseg_status raseg_model_num_classes(const raseg_model* model, int* out);
/* image: channel-planar float CHW in [0,1], c == 3, h and w multiples of 32.
 * out_probs must hold n_out*h*w floats: sigmoid probabilities for the binary
 * task, per-class softmax probabilities otherwise. */
raseg_status raseg_model_predict(raseg_model* model, const float* image, int c, int h, int w,
                                 float* out_probs);
void raseg_model_free(raseg_model* model);

#ifdef __cplusplus
}
#endif

#endif /* RASEG_H */
