#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
