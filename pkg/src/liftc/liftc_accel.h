/* Accelerator entry points targeted by liftc stubs.
 *
 * A stand-in interface: one function per registry operator.
 * Sequences are (pointer, length) pairs, matrices are row-major
 * (pointer, rows, cols). Sequence results go to `out` and the
 * function returns their length; matrix results also report
 * `out_cols` and return the row count; Int results are returned.
 */
#ifndef LIFTC_ACCEL_H
#define LIFTC_ACCEL_H

/* sum of a[j] * b[j] over the common prefix */
int liftc_dot_product(const int *a, int a_len, const int *b, int b_len);
/* 1-D convolution: dot products of kernel-sized windows taken every stride elements */
int liftc_conv1d(const int *data, int data_len, const int *kernel, int kernel_len, int stride, int *out);
/* pointwise sum over the common prefix */
int liftc_elemwise_add(const int *a, int a_len, const int *b, int b_len, int *out);
/* pointwise product over the common prefix */
int liftc_elemwise_mul(const int *a, int a_len, const int *b, int b_len, int *out);
/* multiply every element by a constant */
int liftc_scalar_scale(const int *a, int a_len, int c, int *out);
/* row vector times matrix (helper for matmul) */
int liftc_vecmat(const int *r, int r_len, const int *m, int m_rows, int m_cols, int *out);
/* matrix product, result[i][j] = sum_k A[i][k] * B[k][j] */
int liftc_matmul(const int *A, int A_rows, int A_cols, const int *B, int B_rows, int B_cols, int *out, int *out_cols);

#endif /* LIFTC_ACCEL_H */
