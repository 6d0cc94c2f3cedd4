#include <math.h>
#include <stdlib.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

/* convection: dse=advanced dle=speculative */
int convection(double *restrict u_vec, const int time_m, const int time_M)
{
  double (*restrict u)[81][81] = (double (*)[81][81]) u_vec;

  for (int time = time_m; time < time_M; time += 1)
  {
    const int tc = time % 2;
    const int tp1 = (time + 1) % 2;
    #pragma omp parallel for schedule(static)
    for (int x_blk = 1; x_blk < 80; x_blk += 16)
    {
      for (int x = x_blk; x < MIN(x_blk + 16, 80); x += 1)
      {
        #pragma omp simd
        /* speculative: request non-temporal stores and padded rows */
        for (int y = 1; y < 80; y += 1)
        {
          u[tp1][x][y] = 40.0*(0.005*(u[tc][x - 1][y] + u[tc][x][y - 1]) + 0.015000000000000001*u[tc][x][y]);
        }
      }
    }
  }
  return 0;
}
