#ifndef AVSR_H
#define AVSR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Which streams a decode call uses.
 */
typedef enum AvsrModality {
  AVSR_MODALITY_AUDIO = 1,
  AVSR_MODALITY_VIDEO = 2,
  AVSR_MODALITY_AUDIO_VIDEO = 3,
} AvsrModality;

typedef enum AvsrStatus {
  AVSR_STATUS_OK = 0,
  AVSR_STATUS_NULL_POINTER = 1,
  AVSR_STATUS_INVALID_ARGUMENT = 2,
  AVSR_STATUS_DATA_ERROR = 3,
  AVSR_STATUS_NUMERIC_ERROR = 4,
  AVSR_STATUS_INCOMPATIBLE_CHECKPOINT = 5,
  AVSR_STATUS_IO_ERROR = 6,
  AVSR_STATUS_PANIC = 7,
} AvsrStatus;

/*
 A feature matrix, `rows × dim`, row-major.
 */
typedef struct AvsrFeatures AvsrFeatures;

/*
 A loaded checkpoint.
 */
typedef struct AvsrModel AvsrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static NUL-terminated string.
 */
const char *avsr_version(void);

/*
 Message for the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *avsr_last_error(void);

/*
 Total parameter count of the full-scale model.

 # Safety
 `out_total` must be null or point to writable memory.
 */
enum AvsrStatus avsr_full_scale_parameter_count(uint64_t *out_total);

/*
 Loads a checkpoint written by `avsr train`.

 # Safety
 `path` must be a NUL-terminated string; `out_model` must be writable.
 */
enum AvsrStatus avsr_model_load(const char *path, struct AvsrModel **out_model);

/*
 # Safety
 `model` must be null or a handle from [`avsr_model_load`] not yet freed.
 */
void avsr_model_free(struct AvsrModel *model);

/*
 Output labels including blank.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum AvsrStatus avsr_model_vocab_size(const struct AvsrModel *model, size_t *out);

/*
 Decodes one utterance with beam search and returns the best transcript.

 `samples` holds `num_samples` mono samples in [-1, 1]. `video` is null or
 `frames × height × width × 3` RGB values in [0, 1] at `fps_num / fps_den`
 frames per second. The returned string must be released with
 [`avsr_string_free`].

 # Safety
 Pointers must be valid for the given lengths; `out_text` must be writable.
 */
enum AvsrStatus avsr_decode(const struct AvsrModel *model,
                            const float *samples,
                            size_t num_samples,
                            uint32_t sample_rate,
                            const float *video,
                            size_t frames,
                            size_t height,
                            size_t width,
                            uint64_t fps_num,
                            uint64_t fps_den,
                            enum AvsrModality modality,
                            size_t beam_width,
                            char **out_text);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void avsr_string_free(char *s);

/*
 Stacked log-mel features with the checkpoint's front end. With video
 metadata (`frames > 0`) the hop follows the video frame rate.

 # Safety
 `samples` must hold `num_samples` values; `out` must be writable.
 */
enum AvsrStatus avsr_featurize(const struct AvsrModel *model,
                               const float *samples,
                               size_t num_samples,
                               uint32_t sample_rate,
                               size_t frames,
                               uint64_t fps_num,
                               uint64_t fps_den,
                               struct AvsrFeatures **out);

/*
 # Safety
 `f` must be a live handle.
 */
size_t avsr_features_rows(const struct AvsrFeatures *f);

/*
 # Safety
 `f` must be a live handle.
 */
size_t avsr_features_dim(const struct AvsrFeatures *f);

/*
 Row-major `rows × dim` values, owned by the handle.

 # Safety
 `f` must be a live handle.
 */
const double *avsr_features_data(const struct AvsrFeatures *f);

/*
 Frame centre times in seconds, `rows` values owned by the handle.

 # Safety
 `f` must be a live handle.
 */
const double *avsr_features_timestamps(const struct AvsrFeatures *f);

/*
 # Safety
 `f` must be null or a handle from [`avsr_featurize`] not yet freed.
 */
void avsr_features_free(struct AvsrFeatures *f);

/*
 Word errors (substitutions + insertions + deletions) and reference length
 after lowercasing and stripping punctuation.

 # Safety
 Strings must be NUL-terminated; outputs must be writable.
 */
enum AvsrStatus avsr_word_errors(const char *reference,
                                 const char *hypothesis,
                                 size_t *out_errors,
                                 size_t *out_ref_words);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AVSR_H */
