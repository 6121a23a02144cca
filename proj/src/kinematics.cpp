#include "fe2/kinematics.hpp"

namespace fe2 {

namespace {

constexpr int levi_civita(int i, int j, int k) {
    return (i - j) * (j - k) * (k - i) / 2;
}

}  // namespace

Tensor2<3> tensor_cross(const Tensor2<3>& A, const Tensor2<3>& B) {
    Tensor2<3> out = Tensor2<3>::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int J = 0; J < 3; ++J) {
            double sum = 0.0;
            for (int j = 0; j < 3; ++j) {
                for (int k = 0; k < 3; ++k) {
                    const int eps_i = levi_civita(i, j, k);
                    if (eps_i == 0) continue;
                    for (int M = 0; M < 3; ++M) {
                        for (int N = 0; N < 3; ++N) {
                            const int eps_J = levi_civita(J, M, N);
                            if (eps_J == 0) continue;
                            sum += eps_i * eps_J * A(j, M) * B(k, N);
                        }
                    }
                }
            }
            out(i, J) = sum;
        }
    }
    return out;
}

Eigen::MatrixXd tensor_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != 3 || A.cols() != 3 || B.rows() != 3 || B.cols() != 3) {
        throw std::invalid_argument("tensor_cross is only defined for 3x3 tensors");
    }
    const Tensor2<3> a = A;
    const Tensor2<3> b = B;
    return tensor_cross(a, b);
}

}  // namespace fe2
