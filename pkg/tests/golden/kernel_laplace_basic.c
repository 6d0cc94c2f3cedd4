#include <math.h>
#include <stdlib.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

/* laplace: dse=advanced dle=basic */
int laplace(double *restrict bc_right_vec, double *restrict p_vec, double *restrict pn_vec)
{
  double *restrict bc_right = (double *) bc_right_vec;
  double (*restrict p)[31] = (double (*)[31]) p_vec;
  double (*restrict pn)[31] = (double (*)[31]) pn_vec;

  #pragma omp parallel for schedule(static)
  for (int x = 1; x < 30; x += 1)
  {
    for (int y = 1; y < 30; y += 1)
    {
      p[x][y] = 0.25*(pn[x - 1][y] + pn[x][y - 1] + pn[x][y + 1] + pn[x + 1][y]);
    }
  }
  #pragma omp parallel for schedule(static)
  for (int x = 0; x < 31; x += 1)
  {
    p[x][0] = 0.0;
  }
  #pragma omp parallel for schedule(static)
  for (int x = 0; x < 31; x += 1)
  {
    p[x][30] = bc_right[x];
  }
  #pragma omp parallel for schedule(static)
  for (int y = 0; y < 31; y += 1)
  {
    p[0][y] = p[1][y];
  }
  #pragma omp parallel for schedule(static)
  for (int y = 0; y < 31; y += 1)
  {
    p[30][y] = p[29][y];
  }
  return 0;
}
