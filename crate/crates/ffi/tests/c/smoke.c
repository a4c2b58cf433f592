#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include "cvoc.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    CvocStatus s_ = (call);                                                \
    if (s_ != CVOC_STATUS_OK) {                                            \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, cvoc_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  enum { N = 8000 };
  double *x = malloc(N * sizeof(double));
  for (int i = 0; i < N; i++) {
    double t = i / 16000.0;
    x[i] = 0.0;
    for (int k = 1; k <= 20; k++) x[i] += sin(2.0 * M_PI * 150.0 * k * t) / k;
  }
  CvocWaveform *w = NULL;
  CHECK(cvoc_waveform_new(x, N, 16000, &w));
  free(x);

  CvocAnalysisOptions ao = cvoc_analysis_options_default();
  ao.basis = false;
  CvocBundle *b = NULL;
  CHECK(cvoc_analyze(w, &ao, &b));

  size_t n = 0;
  CHECK(cvoc_bundle_copy_f0(b, NULL, 0, &n));
  double *f0 = malloc(n * sizeof(double));
  CHECK(cvoc_bundle_copy_f0(b, f0, n, &n));
  double mid = f0[n / 2];
  free(f0);
  if (fabs(mid - 150.0) > 5.0) {
    fprintf(stderr, "f0 %f\n", mid);
    return 1;
  }

  CvocSynthesisOptions so = cvoc_synthesis_options_default();
  so.engine = CVOC_ENGINE_SINUSOIDAL;
  CvocWaveform *y = NULL;
  CHECK(cvoc_synthesize(b, &so, &y));
  if (cvoc_waveform_len(y) == 0) return 1;

  if (cvoc_bundle_read("/nonexistent/b.cvoc", &b) != CVOC_STATUS_IO) return 1;

  cvoc_waveform_free(y);
  cvoc_bundle_free(b);
  cvoc_waveform_free(w);
  printf("ok %s\n", cvoc_version());
  return 0;
}
