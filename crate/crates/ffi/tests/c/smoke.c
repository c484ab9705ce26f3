#include <math.h>
#include <stdio.h>
#include "cdspec.h"

#define CHECK(x)                                                        \
  do {                                                                  \
    CdspecStatus s_ = (x);                                              \
    if (s_ != CDSPEC_STATUS_OK) {                                       \
      fprintf(stderr, "%s -> %d: %s\n", #x, (int)s_, cdspec_last_error()); \
      return 1;                                                         \
    }                                                                   \
  } while (0)

int main(void) {
  CdspecMatrix *m = NULL;
  CHECK(cdspec_matrix_toeplitz_exp(1, 16.0, 0.1, 1.0, &m));
  size_t n = cdspec_matrix_size(m);
  double c0 = 0.0, cq = 0.0;
  CHECK(cdspec_matrix_lower_bound(m, 2.0, 1, 0, &c0));
  CHECK(cdspec_stability_transfer(m, 2.0, c0, 1.0, 0.5, 1.0 / 4096, &cq, NULL));
  cdspec_matrix_free(m);

  CdspecGabor *g = NULL;
  double lo = 0.0, hi = 0.0;
  /* critical density: the lower bound collapses */
  CHECK(cdspec_gabor_gaussian(0.125, 4.0, 1.0, 1.0, &g));
  CHECK(cdspec_gabor_frame_bounds(g, &lo, &hi));
  cdspec_gabor_free(g);
  if (lo > 1e-8) return 2;
  CHECK(cdspec_gabor_gaussian(0.125, 4.0, 0.5, 0.5, &g));
  CHECK(cdspec_gabor_frame_bounds(g, &lo, &hi));
  cdspec_gabor_free(g);

  printf("n=%zu c0=%.6f cq=%.6f A=%.6f B=%.6f\n", n, c0, cq, lo, hi);
  return (n == 33 && c0 > 0.0 && cq > 0.0 && cq <= c0 && lo > 0.0 && hi >= lo) ? 0 : 3;
}
