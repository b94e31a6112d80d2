"""
シミュレーション - 結果のサンプリングと繰り返し実験
"""
