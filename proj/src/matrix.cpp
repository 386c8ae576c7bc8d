#include "textrev/matrix.hpp"

namespace textrev {

namespace {

// C(m x n) = A(m x k) * B(k x n)
void gemm_nn(int m, int n, int k, float alpha, const float* a, int lda,
             const float* b, int ldb, float* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<size_t>(i) * ldc;
    const float* ai = a + static_cast<size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const float aip = alpha * ai[p];
      const float* bp = b + static_cast<size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C(m x n) = A(m x k) * B(n x k)^T
void gemm_nt(int m, int n, int k, float alpha, const float* a, int lda,
             const float* b, int ldb, float* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * lda;
    float* ci = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<size_t>(j) * ldb;
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += alpha * acc;
    }
  }
}

// C(m x n) = A(k x m)^T * B(k x n)
void gemm_tn(int m, int n, int k, float alpha, const float* a, int lda,
             const float* b, int ldb, float* c, int ldc) {
  for (int p = 0; p < k; ++p) {
    const float* ap = a + static_cast<size_t>(p) * lda;
    const float* bp = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const float api = alpha * ap[i];
      float* ci = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta, float* c,
          int ldc) {
  if (beta == 0.0f) {
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
  } else if (beta != 1.0f) {
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] *= beta;
    }
  }
  if (!trans_a && !trans_b) {
    gemm_nn(m, n, k, alpha, a, lda, b, ldb, c, ldc);
  } else if (!trans_a && trans_b) {
    gemm_nt(m, n, k, alpha, a, lda, b, ldb, c, ldc);
  } else if (trans_a && !trans_b) {
    gemm_tn(m, n, k, alpha, a, lda, b, ldb, c, ldc);
  } else {
    // A^T * B^T never occurs in the network; compose via temporary if needed.
    assert(false && "gemm: TT form not supported");
  }
}

}  // namespace textrev
