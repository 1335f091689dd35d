package com.example.bulb;

public class BulbController {
    private BluetoothGatt gatt;
    private BluetoothGattCharacteristic color;

    public void connect(Context ctx, BluetoothDevice device) {
        gatt = device.connectGatt(ctx, false, new BulbCallback());
    }

    public void setColor(int r, int g, int b) {
        color.setValue(new byte[] {(byte) r, (byte) g, (byte) b});
        gatt.writeCharacteristic(color);
    }
}
