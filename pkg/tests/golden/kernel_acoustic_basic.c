#include <math.h>
#include <stdlib.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

/* acoustic_forward: dse=advanced dle=basic */
int acoustic_forward(double *restrict eta_vec, double *restrict m_vec, double *restrict rec_vec, const double *restrict rec_coords_vec, double *restrict src_vec, const double *restrict src_coords_vec, double *restrict u_vec, const int time_m, const int time_M)
{
  double (*restrict eta)[61] = (double (*)[61]) eta_vec;
  double (*restrict m)[61] = (double (*)[61]) m_vec;
  double (*restrict rec)[101] = (double (*)[101]) rec_vec;
  const double (*restrict rec_coords)[2] = (const double (*)[2]) rec_coords_vec;
  double (*restrict src)[1] = (double (*)[1]) src_vec;
  const double (*restrict src_coords)[2] = (const double (*)[2]) src_coords_vec;
  double (*restrict u)[61][61] = (double (*)[61][61]) u_vec;
  double *q0_vec = (double *) malloc(sizeof(double) * 61 * 61);
  double (*restrict q0)[61] = (double (*)[61]) q0_vec;
  double *q1_vec = (double *) malloc(sizeof(double) * 61 * 61);
  double (*restrict q1)[61] = (double (*)[61]) q1_vec;
  double *q2_vec = (double *) malloc(sizeof(double) * 61 * 61);
  double (*restrict q2)[61] = (double (*)[61]) q2_vec;
  double *q3_vec = (double *) malloc(sizeof(double) * 61 * 61);
  double (*restrict q3)[61] = (double (*)[61]) q3_vec;

  /* time-invariant precomputation */
  #pragma omp parallel for schedule(static)
  for (int x = 0; x < 61; x += 1)
  {
    for (int y = 0; y < 61; y += 1)
    {
      q0[x][y] = 70.71067811865474*eta[x][y];
    }
  }
  #pragma omp parallel for schedule(static)
  for (int x = 0; x < 61; x += 1)
  {
    for (int y = 0; y < 61; y += 1)
    {
      q1[x][y] = (-100.0)*m[x][y];
    }
  }
  #pragma omp parallel for schedule(static)
  for (int x = 0; x < 61; x += 1)
  {
    for (int y = 0; y < 61; y += 1)
    {
      q2[x][y] = 200.0*m[x][y];
    }
  }
  #pragma omp parallel for schedule(static)
  for (int x = 0; x < 61; x += 1)
  {
    for (int y = 0; y < 61; y += 1)
    {
      q3[x][y] = 0.7071067811865475*eta[x][y] + m[x][y];
    }
  }

  for (int time = time_m; time < time_M; time += 1)
  {
    const int tm1 = ((time - 1) % 3 + 3) % 3;
    const int tc = time % 3;
    const int tp1 = (time + 1) % 3;
    #pragma omp parallel for schedule(static)
    for (int x = 1; x < 60; x += 1)
    {
      for (int y = 1; y < 60; y += 1)
      {
        u[tp1][x][y] = 0.01*((1.9999999999999996*(u[tc][x - 1][y] + u[tc][x][y - 1] + u[tc][x][y + 1] + u[tc][x + 1][y]) + q0[x][y]*u[tm1][x][y] + q1[x][y]*u[tm1][x][y] + q2[x][y]*u[tc][x][y] - 7.999999999999998*u[tc][x][y])/q3[x][y]);
      }
    }
    /* inject src */
    for (int p = 0; p < 1; p += 1)
    {
      const double rx = src_coords[p][0]/10.0;
      int ix = (int) floor(rx);
      if (ix > 59) ix = 59;
      const double fx = rx - ix;
      const double ry = src_coords[p][1]/10.0;
      int iy = (int) floor(ry);
      if (iy > 59) iy = 59;
      const double fy = ry - iy;
      const double w0 = (1.0 - fx)*(1.0 - fy);
      const double w1 = (1.0 - fx)*fy;
      const double w2 = fx*(1.0 - fy);
      const double w3 = fx*fy;
      u[tp1][ix][iy] += w0*(src[time][p]*1.9999999999999996/m[ix][iy]);
      u[tp1][ix][iy + 1] += w1*(src[time][p]*1.9999999999999996/m[ix][iy + 1]);
      u[tp1][ix + 1][iy] += w2*(src[time][p]*1.9999999999999996/m[ix + 1][iy]);
      u[tp1][ix + 1][iy + 1] += w3*(src[time][p]*1.9999999999999996/m[ix + 1][iy + 1]);
    }
    /* interpolate rec */
    for (int p = 0; p < 101; p += 1)
    {
      const double rx = rec_coords[p][0]/10.0;
      int ix = (int) floor(rx);
      if (ix > 59) ix = 59;
      const double fx = rx - ix;
      const double ry = rec_coords[p][1]/10.0;
      int iy = (int) floor(ry);
      if (iy > 59) iy = 59;
      const double fy = ry - iy;
      const double w0 = (1.0 - fx)*(1.0 - fy);
      const double w1 = (1.0 - fx)*fy;
      const double w2 = fx*(1.0 - fy);
      const double w3 = fx*fy;
      rec[time][p] = w0*u[tp1][ix][iy] + w1*u[tp1][ix][iy + 1] + w2*u[tp1][ix + 1][iy] + w3*u[tp1][ix + 1][iy + 1];
    }
  }
  free(q0_vec);
  free(q1_vec);
  free(q2_vec);
  free(q3_vec);
  return 0;
}
