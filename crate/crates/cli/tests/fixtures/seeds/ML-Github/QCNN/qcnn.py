from torch import nn


class ConvNet(nn.Module):
    """Small convolutional network for 8x8 inputs."""

    def __init__(self, n_classes: int = 2) -> None:
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 4, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
        )
        self.head = nn.Linear(4 * 4 * 4, n_classes)

    def forward(self, x):
        return self.head(self.features(x).flatten(1))
